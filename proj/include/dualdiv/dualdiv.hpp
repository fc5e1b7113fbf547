#pragma once

#include "dualdiv/errors.hpp"
#include "dualdiv/levy_model.hpp"
#include "dualdiv/polynomial.hpp"
#include "dualdiv/scale_function.hpp"
#include "dualdiv/laplace_inversion.hpp"
#include "dualdiv/barrier_kernel.hpp"
#include "dualdiv/dividend.hpp"
#include "dualdiv/injection.hpp"
#include "dualdiv/generator.hpp"
#include "dualdiv/philox.hpp"
#include "dualdiv/montecarlo.hpp"
#include "dualdiv/csv.hpp"
#include "dualdiv/report.hpp"
