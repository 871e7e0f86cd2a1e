#pragma once
namespace slekrho::mink {}
