# Distributions module
