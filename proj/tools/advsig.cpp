// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdio>

#include "advsig/common.hpp"

int main() {
  std::puts(advsig::kToolVersion);
  return 0;
}
