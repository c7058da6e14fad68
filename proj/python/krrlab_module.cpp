// placeholder
#include <pybind11/pybind11.h>
PYBIND11_MODULE(krrlab, m) { m.doc() = "placeholder"; }
