#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace scenequal {

enum class Branch { iqa = 0, vqa = 1, rep = 2 };

inline constexpr std::array<Branch, 3> kBranches = {Branch::iqa, Branch::vqa, Branch::rep};
inline constexpr std::size_t kBranchCount = kBranches.size();

constexpr std::size_t index_of(Branch b) { return static_cast<std::size_t>(b); }

std::string_view to_string(Branch b);
Branch branch_from_string(std::string_view name);

// One value per branch, indexed by index_of(Branch).
template <typename T>
using PerBranch = std::array<T, kBranchCount>;

}  // namespace scenequal
