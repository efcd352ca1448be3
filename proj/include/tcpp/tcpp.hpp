/**
 * @file tcpp.hpp
 * @brief Everything: trees, scenario models, pricing, no-free-lunch checks and market bounds.
 */
#pragma once

#include "tcpp/error.hpp"
#include "tcpp/lp.hpp"
#include "tcpp/tree.hpp"
#include "tcpp/scenario.hpp"
#include "tcpp/random.hpp"
#include "tcpp/family.hpp"
#include "tcpp/fixtures.hpp"
#include "tcpp/pricing.hpp"
#include "tcpp/nfl.hpp"
#include "tcpp/market.hpp"
#include "tcpp/market_file.hpp"
