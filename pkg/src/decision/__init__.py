# Decision module
