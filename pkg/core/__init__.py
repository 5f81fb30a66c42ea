# Shared errors and result records
