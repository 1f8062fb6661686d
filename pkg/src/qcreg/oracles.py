"""Reference values for the ``norms`` command.

Intrinsic norms of ``f(x) = x1 - c1`` on the unit square ``Q`` centred at
``c``, including the ``L^p`` part.  The Besov double integral reduces to
``int_{[-1,1]^2} |u1|**p / |u|**(2+sp) (1-|u1|)(1-|u2|) du`` (done in polar
coordinates); for ``s = 1/2`` the inner Sobolev integral has the closed-form
antiderivative ``u2 * asinh(u1/|u2|)``.  Values come from adaptive
quadrature to ~1e-10 and are frozen here.
"""

X1_ON_SQUARE = {
    ("besov", 0.25, 2.0): 0.9357018323794591,
    ("besov", 0.5, 2.0): 1.252971720533637,
    ("besov", 0.75, 2.0): 2.0275941345083166,
    ("besov", 0.5, 3.0): 0.8896480490271087,
    ("besov", 0.5, 4.0): 0.7885336350047994,
    ("besov", 0.25, 4.0): 0.6733346223898375,
    ("sobolev", 0.5, 2.0): 1.252971720533637,
    ("sobolev", 0.5, 3.0): 1.2289197726628804,
    ("sobolev", 0.5, 4.0): 1.2262722944750453,
}


def lookup(function_id: str, space: str, s: float, p: float):
    if function_id != "x1-on-square":
        return None
    return X1_ON_SQUARE.get((space, float(s), float(p)))
