"""Independent reference values used by several test modules."""

import math

from scipy.integrate import solve_ivp
from scipy.optimize import brentq


def shooting_level(L=math.pi):
    """Least energy of -u'' = u^3 on (0, L) by shooting on u'(0)."""

    def rhs(x, y):
        return [y[1], -y[0] ** 3, y[1] ** 2]

    def first_zero(a):
        ev = lambda x, y: y[0]
        ev.terminal, ev.direction = True, -1
        s = solve_ivp(rhs, [1e-12, 20 * L], [1e-12 * a, a, 0.0], rtol=1e-12, atol=1e-14, events=ev)
        return s.t_events[0][0]

    a = brentq(lambda a: first_zero(a) - L, 0.1, 10.0, xtol=1e-14)
    s = solve_ivp(rhs, [0, L], [0.0, a, 0.0], rtol=1e-12, atol=1e-14)
    # on the Nehari set J = (1/2 - 1/4) int u'^2
    return 0.25 * s.y[2, -1]
