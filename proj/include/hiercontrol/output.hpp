#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hiercontrol/grid.hpp"

namespace hiercontrol {

/// 17 significant digits, negative zero printed as 0.
std::string format_value(double v);

/// Header `t,x,value` (`t,x,y,value` in 2D); rows time-major, then node order.
std::string csv_text(const SpaceTimeField& f);
void emit_csv(const SpaceTimeField& f, const std::string& path);

/// Pretty-printed JSON with sorted keys and a trailing newline.
void emit_report(const nlohmann::json& report, const std::string& path);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart with a fixed 800x500 viewBox.
std::string svg_text(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, bool log_y = false);
void emit_svg(const std::vector<Series>& series, const std::string& path, const std::string& title,
              const std::string& xlabel = "t", const std::string& ylabel = "", bool log_y = false);

void write_text(const std::string& text, const std::string& path);

}  // namespace hiercontrol
