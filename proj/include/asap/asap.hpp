// Convenience umbrella: pulls in the whole library.
#pragma once

#include "asap/analysis.hpp"
#include "asap/dynamics.hpp"
#include "asap/equilibrium.hpp"
#include "asap/experiments.hpp"
#include "asap/graph.hpp"
#include "asap/integrator.hpp"
#include "asap/io.hpp"
#include "asap/rng.hpp"
#include "asap/types.hpp"
