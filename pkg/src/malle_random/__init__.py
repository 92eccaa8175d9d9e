"""Random groups with local data: Malle invariants, local homomorphism sets,
Malle-Bhargava series and Monte Carlo checks of the moment and counting laws."""

__version__ = "0.1.0"
