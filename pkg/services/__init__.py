# One service class per toolkit module, operations as static methods
