#pragma once

#include "lazysgld/activation.hpp"
#include "lazysgld/assumptions.hpp"
#include "lazysgld/config.hpp"
#include "lazysgld/core.hpp"
#include "lazysgld/diagnostics.hpp"
#include "lazysgld/experiments.hpp"
#include "lazysgld/io.hpp"
#include "lazysgld/loss.hpp"
#include "lazysgld/model.hpp"
#include "lazysgld/ntk.hpp"
#include "lazysgld/parallel.hpp"
#include "lazysgld/runtime.hpp"
#include "lazysgld/sgld.hpp"
