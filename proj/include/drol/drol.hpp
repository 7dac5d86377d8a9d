#pragma once

#include "drol/critic.hpp"
#include "drol/dataset_io.hpp"
#include "drol/diagnostics.hpp"
#include "drol/envs.hpp"
#include "drol/error.hpp"
#include "drol/latent_prior.hpp"
#include "drol/nn.hpp"
#include "drol/rng.hpp"
#include "drol/routing_actor.hpp"
#include "drol/theory.hpp"
#include "drol/trainer.hpp"
#include "drol/transition.hpp"
