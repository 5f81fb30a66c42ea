# Experiment coordination for the mt command line
