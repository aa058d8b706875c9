"""
bayescore: байесовский вывод от сопряжённых апостериорных до MCMC и теории решений
"""
