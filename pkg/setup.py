"""Build the optional compiled pair kernel.

The package works without it; ``focusnls.kernels`` falls back to numpy when
the extension is missing.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: ship the pure-Python path only
    cythonize = None


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or failing
            print(f"warning: compiled kernel not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: {ext.name} not built ({exc}); using numpy fallback")


ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "focusnls._pairkernel",
                ["src/focusnls/_pairkernel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
