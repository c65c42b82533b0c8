#pragma once

#include "pmred/errors.hpp"
#include "pmred/model.hpp"
#include "pmred/noise.hpp"
#include "pmred/spde.hpp"
#include "pmred/pm.hpp"
#include "pmred/reduced.hpp"
#include "pmred/diagnostics.hpp"
#include "pmred/io.hpp"
#include "pmred/config.hpp"
#include "pmred/app.hpp"
#include "pmred/version.hpp"
