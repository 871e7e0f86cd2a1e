#include "slekrho/mink.hpp"
