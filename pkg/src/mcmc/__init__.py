# MCMC module
