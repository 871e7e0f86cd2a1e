#include "slekrho/experiment.hpp"
