# Utils package for the FOSI optimizer lab
