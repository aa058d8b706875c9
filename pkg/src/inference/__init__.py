# Inference module
