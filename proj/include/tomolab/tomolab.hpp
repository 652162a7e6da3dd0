#pragma once

#include "tomolab/bias.hpp"
#include "tomolab/errors.hpp"
#include "tomolab/fock.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/io.hpp"
#include "tomolab/mle.hpp"
#include "tomolab/rng.hpp"
#include "tomolab/state_design.hpp"
#include "tomolab/steihaug.hpp"
