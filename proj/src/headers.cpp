// Compiles every public header together under the project warning flags, so a
// header that stops being self-sufficient or starts warning breaks the build.
#include "dualschro/cli.hpp"
#include "dualschro/continuation.hpp"
#include "dualschro/dual_transform.hpp"
#include "dualschro/errors.hpp"
#include "dualschro/io.hpp"
#include "dualschro/mesh.hpp"
#include "dualschro/nonlinearity.hpp"
#include "dualschro/solver.hpp"
#include "dualschro/theta.hpp"
