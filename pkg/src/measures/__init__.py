# Measures module
