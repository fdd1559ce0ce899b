"""Numerics for step-2 corank-2 sub-Riemannian structures: nilpotent geodesics, cut
times, Popp volumes of the unit ball, the spherical Hausdorff density and its
regularity across eigenvalue resonances."""

__version__ = "0.1.0"
