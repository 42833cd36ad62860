import os

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup


def eigen_include():
    candidates = [
        os.environ.get("EIGEN3_INCLUDE_DIR"),
        "/usr/include/eigen3",
        "/usr/local/include/eigen3",
    ]
    for path in candidates:
        if path and os.path.isdir(path):
            return path
    raise RuntimeError("Eigen headers not found; set EIGEN3_INCLUDE_DIR")


core = Pybind11Extension(
    "hgot._core",
    sources=[
        "python/bindings.cpp",
        "src/common.cpp",
        "src/tape.cpp",
        "src/hetgraph.cpp",
        "src/transport.cpp",
        "src/encoder.cpp",
        "src/objective.cpp",
        "src/eval.cpp",
        "src/cli.cpp",
    ],
    include_dirs=["include", "vendor", eigen_include()],
    cxx_std=20,
    extra_compile_args=["-O2"],
)

setup(ext_modules=[core], cmdclass={"build_ext": build_ext})
