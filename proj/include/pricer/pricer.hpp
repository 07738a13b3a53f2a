#pragma once
#include <pricer/numeric.hpp>
#include <pricer/network_model.hpp>
#include <pricer/privacy.hpp>
#include <pricer/analysis.hpp>
#include <pricer/protocol.hpp>
#include <pricer/optimizer.hpp>
#include <pricer/oracle.hpp>
#include <pricer/experiments.hpp>
