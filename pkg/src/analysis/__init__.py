# Analysis module
