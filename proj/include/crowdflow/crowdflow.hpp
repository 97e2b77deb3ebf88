#pragma once

#include "crowdflow/config.hpp"
#include "crowdflow/core.hpp"
#include "crowdflow/eikonal.hpp"
#include "crowdflow/fields.hpp"
#include "crowdflow/metrics.hpp"
#include "crowdflow/particles.hpp"
#include "crowdflow/rng.hpp"
#include "crowdflow/scene.hpp"
#include "crowdflow/sim.hpp"
#include "crowdflow/sparse.hpp"
#include "crowdflow/sph.hpp"
#include "crowdflow/uic.hpp"
#include "crowdflow/visgraph.hpp"
