#pragma once

#include "poisonbench/attacks.hpp"
#include "poisonbench/autodiff.hpp"
#include "poisonbench/craft.hpp"
#include "poisonbench/data.hpp"
#include "poisonbench/dct.hpp"
#include "poisonbench/harness.hpp"
#include "poisonbench/noise.hpp"
#include "poisonbench/optim.hpp"
#include "poisonbench/poison_pack.hpp"
#include "poisonbench/zoo.hpp"
