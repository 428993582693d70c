"""qmlab: desk-scale experiments on joint quasimodes of semiclassical operators.

Subpackages map to the pipeline stages: grids and transforms (``grid``),
symbol families and quantization (``symbols``), model quasimodes and defect
measurements (``quasimodes``), the continuous wavelet layer (``wavelets``),
the WKB propagator (``propagator``), closed-form exponents and sweep fitting
(``estimates``) and the command-line front end (``cli``).
"""

__version__ = "0.1.0"
