"""Semi-discrete upwind scheme for the Keyfitz-Kranzer system u_t + (u phi(r))_x = 0,
v_t + (v phi(r))_x = 0, r = sqrt(u^2 + v^2), with checks of its discrete estimates."""

__version__ = "0.1.0"
