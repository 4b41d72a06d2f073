namespace scarline {}
