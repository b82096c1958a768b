#pragma once

#include "ccnet/distributions.hpp"
#include "ccnet/errors.hpp"
#include "ccnet/experiment.hpp"
#include "ccnet/free_boundary.hpp"
#include "ccnet/kv_config.hpp"
#include "ccnet/model_params.hpp"
#include "ccnet/network_sim.hpp"
#include "ccnet/parallel.hpp"
#include "ccnet/param_select.hpp"
#include "ccnet/rbm_mc.hpp"
#include "ccnet/skorohod.hpp"
