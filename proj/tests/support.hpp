#pragma once

#include "doctest.h"
#include "fd_check.hpp"
