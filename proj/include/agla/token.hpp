#pragma once

#include <cstddef>
#include <vector>

namespace agla {

using TokenId = std::size_t;
using TokenSeq = std::vector<TokenId>;

}  // namespace agla
