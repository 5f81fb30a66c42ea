# Numerical modules: operators, measurement, causality, uncertainty, zeno, serialization
