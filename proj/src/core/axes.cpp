#include "core/axes.hpp"

#include <algorithm>
#include <set>

namespace fusion {

AxisSet::AxisSet(std::vector<Axis> axes) : axes_(std::move(axes)) {
  std::set<std::string> seen;
  for (const auto& a : axes_) {
    if (a.levels.empty()) throw InvalidSpec("axis '" + a.name + "' has no levels");
    if (!seen.insert(a.name).second)
      throw InvalidSpec("duplicate axis name '" + a.name + "'");
    std::set<std::string> lv(a.levels.begin(), a.levels.end());
    if (lv.size() != a.levels.size())
      throw InvalidSpec("duplicate level label on axis '" + a.name + "'");
  }
  strides_.assign(axes_.size(), 1);
  for (std::size_t i = axes_.size(); i-- > 0;) {
    if (i + 1 < axes_.size()) strides_[i] = strides_[i + 1] * axes_[i + 1].levels.size();
  }
  total_ = 1;
  for (const auto& a : axes_) total_ *= a.levels.size();
}

bool AxisSet::has_axis(const std::string& name) const {
  return std::any_of(axes_.begin(), axes_.end(),
                     [&](const Axis& a) { return a.name == name; });
}

std::size_t AxisSet::axis_index(const std::string& name) const {
  for (std::size_t i = 0; i < axes_.size(); ++i)
    if (axes_[i].name == name) return i;
  throw InvalidSpec("unknown axis '" + name + "'");
}

std::size_t AxisSet::flatten(const std::vector<std::size_t>& multi) const {
  std::size_t cell = 0;
  for (std::size_t i = 0; i < axes_.size(); ++i) cell += multi[i] * strides_[i];
  return cell;
}

std::vector<std::size_t> AxisSet::unflatten(std::size_t cell) const {
  std::vector<std::size_t> multi(axes_.size());
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    multi[i] = (cell / strides_[i]) % axes_[i].levels.size();
  }
  return multi;
}

std::size_t AxisSet::coord(std::size_t cell, std::size_t axis) const {
  return (cell / strides_[axis]) % axes_[axis].levels.size();
}

AxisSet AxisSet::subset(const std::vector<std::string>& names) const {
  std::vector<Axis> sub;
  sub.reserve(names.size());
  for (const auto& n : names) sub.push_back(axes_[axis_index(n)]);
  return AxisSet(std::move(sub));
}

std::size_t AxisSet::level_index(const std::string& axis, const std::string& level) const {
  const Axis& a = axes_[axis_index(axis)];
  for (std::size_t i = 0; i < a.levels.size(); ++i)
    if (a.levels[i] == level) return i;
  throw InvalidSpec("unknown level '" + level + "' on axis '" + axis + "'");
}

std::string AxisSet::cell_label(std::size_t cell) const {
  std::string out;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (i) out += ',';
    out += axes_[i].name + "=" + axes_[i].levels[coord(cell, i)];
  }
  return out;
}

bool AxisSet::same_as(const AxisSet& other) const {
  if (axes_.size() != other.axes_.size()) return false;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (axes_[i].name != other.axes_[i].name) return false;
    if (axes_[i].levels != other.axes_[i].levels) return false;
  }
  return true;
}

std::vector<std::string> AxisSet::axis_names() const {
  std::vector<std::string> out;
  out.reserve(axes_.size());
  for (const auto& a : axes_) out.push_back(a.name);
  return out;
}

Projection::Projection(const AxisSet& full, const AxisSet& sub) {
  std::vector<std::size_t> which(sub.axis_count());
  for (std::size_t i = 0; i < sub.axis_count(); ++i) {
    which[i] = full.axis_index(sub.axis(i).name);
    if (full.axis(which[i]).levels != sub.axis(i).levels)
      throw InvalidSpec("axis '" + sub.axis(i).name + "' has mismatched levels");
  }
  map_.resize(full.cell_count());
  std::vector<std::size_t> multi(sub.axis_count());
  for (std::size_t c = 0; c < full.cell_count(); ++c) {
    for (std::size_t i = 0; i < sub.axis_count(); ++i) multi[i] = full.coord(c, which[i]);
    map_[c] = sub.flatten(multi);
  }
}

}  // namespace fusion
