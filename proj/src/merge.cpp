#include "adl/merge.hpp"

#include <algorithm>

namespace adl {

namespace {

using Lines = std::vector<std::string>;

/// match[i] = index in `b` paired with a[i] by one LCS, or -1.
std::vector<int> lcs_match(const Lines& a, const Lines& b) {
  std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> len(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      len[i][j] = a[i] == b[j] ? len[i + 1][j + 1] + 1 : std::max(len[i + 1][j], len[i][j + 1]);
  std::vector<int> match(n, -1);
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j]) {
      match[i] = static_cast<int>(j);
      ++i;
      ++j;
    } else if (len[i + 1][j] >= len[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return match;
}

std::string join(const Lines& l, std::size_t from, std::size_t to) {
  std::string s;
  for (std::size_t i = from; i < to; ++i) s += l[i];
  return s;
}

void conflict_hunk(std::string& out, const std::string& ours, const std::string& theirs,
                   const std::string& ol, const std::string& tl) {
  auto terminated = [](std::string s) {
    if (!s.empty() && s.back() != '\n') s += '\n';
    return s;
  };
  out += "<<<<<<< " + ol + "\n" + terminated(ours) + "=======\n" + terminated(theirs) +
         ">>>>>>> " + tl + "\n";
}

}  // namespace

std::vector<std::string> split_lines(const std::string& text) {
  Lines out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, nl - start + 1));
    start = nl + 1;
  }
  return out;
}

MergeResult merge3(const std::string& base_text, const std::string& ours_text,
                   const std::string& theirs_text, const std::string& ol, const std::string& tl) {
  Lines o = split_lines(base_text), a = split_lines(ours_text), b = split_lines(theirs_text);
  auto ma = lcs_match(o, a), mb = lcs_match(o, b);
  MergeResult r;
  std::size_t io = 0, ia = 0, ib = 0;
  auto stable = [&](std::size_t k) {
    return ma[k] >= 0 && mb[k] >= 0 && static_cast<std::size_t>(ma[k]) >= ia &&
           static_cast<std::size_t>(mb[k]) >= ib;
  };
  while (true) {
    // Run of base lines matched in both versions at the current cursors.
    std::size_t k = 0;
    while (io + k < o.size() && ma[io + k] == static_cast<int>(ia + k) &&
           mb[io + k] == static_cast<int>(ib + k))
      ++k;
    if (k > 0) {
      r.text += join(o, io, io + k);
      io += k;
      ia += k;
      ib += k;
      continue;
    }
    std::size_t next = io;
    while (next < o.size() && !stable(next)) ++next;
    std::size_t ea = next < o.size() ? ma[next] : a.size();
    std::size_t eb = next < o.size() ? mb[next] : b.size();
    if (next == io && ea == ia && eb == ib) break;  // all inputs consumed
    std::string base = join(o, io, next), ours = join(a, ia, ea), theirs = join(b, ib, eb);
    std::size_t n = next - io;
    if (n > 1 && ea - ia == n && eb - ib == n) {
      // Same-length hunk: resolve line by line so adjacent edits merge.
      for (std::size_t t = 0; t < n; ++t) {
        const std::string &x = o[io + t], &y = a[ia + t], &z = b[ib + t];
        if (y == x)
          r.text += z;
        else if (z == x || y == z)
          r.text += y;
        else {
          conflict_hunk(r.text, y, z, ol, tl);
          r.conflict = true;
        }
      }
    } else if (ours == base)
      r.text += theirs;
    else if (theirs == base || ours == theirs)
      r.text += ours;
    else {
      conflict_hunk(r.text, ours, theirs, ol, tl);
      r.conflict = true;
    }
    io = next;
    ia = ea;
    ib = eb;
  }
  return r;
}

MergeResult merge2(const std::string& ours_text, const std::string& theirs_text,
                   const std::string& ol, const std::string& tl) {
  Lines a = split_lines(ours_text), b = split_lines(theirs_text);
  auto m = lcs_match(a, b);
  MergeResult r;
  r.conflict = true;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() || ib < b.size()) {
    std::size_t na = ia;
    while (na < a.size() && (m[na] < 0 || static_cast<std::size_t>(m[na]) < ib)) ++na;
    std::size_t nb = na < a.size() ? m[na] : b.size();
    if (na > ia || nb > ib) conflict_hunk(r.text, join(a, ia, na), join(b, ib, nb), ol, tl);
    if (na < a.size()) r.text += a[na];
    ia = na + 1;
    ib = nb + 1;
    if (na >= a.size()) break;
  }
  return r;
}

}  // namespace adl
