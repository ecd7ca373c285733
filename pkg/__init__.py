# Reaction-diffusion Carleman toolkit (flat layout, run from the repository root)
