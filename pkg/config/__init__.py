# Configuration package for the measurement-theory engine
