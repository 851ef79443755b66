#include <catch2/catch_amalgamated.hpp>
#include "kanlab/kanlab.hpp"
