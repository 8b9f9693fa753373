#include <doctest.h>

#include "neos/report.hpp"
