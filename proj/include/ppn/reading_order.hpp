#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <tuple>
#include <vector>

#include "ppn/document.hpp"

namespace ppn {

/// Two boxes sit on the same text line when their vertical overlap covers at
/// least half of the shorter box.
inline bool share_line(const BBox& a, const BBox& b) {
  const int overlap = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const int smaller = std::min(a.height(), b.height());
  return overlap >= 0 && 2 * overlap >= smaller;
}

/// Top-left to bottom-right serialization. Lines are the connected components
/// of share_line; lines are ordered by their topmost y1 (then leftmost x1),
/// tokens within a line by x1. Ties fall back to the original index.
inline std::vector<std::size_t> reading_order(std::span<const Token> tokens) {
  const std::size_t n = tokens.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };

  std::vector<std::size_t> by_top(n);
  std::iota(by_top.begin(), by_top.end(), 0);
  std::stable_sort(by_top.begin(), by_top.end(), [&](std::size_t a, std::size_t b) {
    return tokens[a].bbox.y1 < tokens[b].bbox.y1;
  });
  for (std::size_t p = 0; p < n; ++p) {
    const auto& a = tokens[by_top[p]].bbox;
    for (std::size_t q = p + 1; q < n; ++q) {
      const auto& b = tokens[by_top[q]].bbox;
      if (b.y1 > a.y2) break;
      if (share_line(a, b)) {
        const auto ra = find(by_top[p]), rb = find(by_top[q]);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }

  // Line key: (min y1, min x1, min index) over members.
  struct LineKey {
    int y1, x1;
    std::size_t first;
  };
  std::vector<LineKey> key(n, {0, 0, 0});
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    const auto& b = tokens[i].bbox;
    if (!seen[r]) {
      key[r] = {b.y1, b.x1, i};
      seen[r] = true;
    } else {
      key[r].y1 = std::min(key[r].y1, b.y1);
      key[r].x1 = std::min(key[r].x1, b.x1);
      key[r].first = std::min(key[r].first, i);
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ka = key[find(a)];
    const auto& kb = key[find(b)];
    return std::tie(ka.y1, ka.x1, ka.first, tokens[a].bbox.x1, a) <
           std::tie(kb.y1, kb.x1, kb.first, tokens[b].bbox.x1, b);
  });
  return order;
}

}  // namespace ppn
