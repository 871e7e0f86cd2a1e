#pragma once
namespace slekrho::experiment {}
