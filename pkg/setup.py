"""Build hook for the optional compiled LCS kernel.

The extension is best-effort: without Cython or a compiler the package
installs in pure-Python mode.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("anchorgate.frontend._lcs_ext", ["src/anchorgate/frontend/_lcs_ext.pyx"], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
