#pragma once

#include "onion_anon/asymptotics.hpp"
#include "onion_anon/distributions.hpp"
#include "onion_anon/error.hpp"
#include "onion_anon/inference.hpp"
#include "onion_anon/model.hpp"
#include "onion_anon/montecarlo.hpp"
#include "onion_anon/numeric.hpp"
#include "onion_anon/structured.hpp"
