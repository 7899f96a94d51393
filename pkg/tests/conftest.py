import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from cohdec.exper import limit_blas_threads

limit_blas_threads(1)
