# Cooperative TOA/RSS localization simulator
