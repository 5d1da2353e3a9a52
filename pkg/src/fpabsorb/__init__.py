"""Kinetic Fokker-Planck equation f_t + v f_x = f_vv on [0, 1] with absorbing walls."""

__version__ = "0.1.0"
