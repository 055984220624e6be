# Energies module
