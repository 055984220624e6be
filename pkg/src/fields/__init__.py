# Fields module
