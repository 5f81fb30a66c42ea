# Test package for the measurement-theory engine
