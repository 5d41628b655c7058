# Empty init file to mark directory as a python package