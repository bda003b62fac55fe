#include "pushrel/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "pushrel/error.hpp"

namespace pushrel {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

}  // namespace

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series) {
  const double W = 640, H = 420, ml = 70, mr = 160, mt = 40, mb = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!(xmin < xmax)) {
    xmin -= 1;
    xmax += 1;
  }
  if (!(ymin < ymax)) {
    ymin -= 1;
    ymax += 1;
  }
  ymin = std::min(ymin, 0.0);
  const double px = (W - ml - mr) / (xmax - xmin);
  const double py = (H - mt - mb) / (ymax - ymin);
  auto X = [&](double x) { return ml + (x - xmin) * px; };
  auto Y = [&](double y) { return H - mb - (y - ymin) * py; };

  std::ofstream out(path);
  require(out.good(), "cannot open " + path + " for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
  // axes
  out << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
      << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
      << "' stroke='black'/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    out << "<text x='" << X(xv) << "' y='" << H - mb + 18
        << "' text-anchor='middle' font-size='11'>" << fmt(xv) << "</text>\n";
    out << "<text x='" << ml - 8 << "' y='" << Y(yv) + 4
        << "' text-anchor='end' font-size='11'>" << fmt(yv) << "</text>\n";
    out << "<line x1='" << ml << "' y1='" << Y(yv) << "' x2='" << W - mr << "' y2='" << Y(yv)
        << "' stroke='#dddddd'/>\n";
  }
  out << "<text x='" << (ml + W - mr) / 2 << "' y='" << H - 12
      << "' text-anchor='middle' font-size='13'>" << x_label << "</text>\n";
  out << "<text x='18' y='" << (mt + H - mb) / 2 << "' font-size='13' transform='rotate(-90 18 "
      << (mt + H - mb) / 2 << ")' text-anchor='middle'>" << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 10];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='2'";
    if (s.dashed) out << " stroke-dasharray='6,4'";
    out << " points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << fmt(X(s.x[i])) << "," << fmt(Y(s.y[i])) << " ";
    out << "'/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << "<circle cx='" << fmt(X(s.x[i])) << "' cy='" << fmt(Y(s.y[i]))
          << "' r='3' fill='" << color << "'/>\n";
    const double ly = mt + 18.0 * static_cast<double>(si);
    out << "<line x1='" << W - mr + 10 << "' y1='" << ly << "' x2='" << W - mr + 34 << "' y2='"
        << ly << "' stroke='" << color << "' stroke-width='2'"
        << (s.dashed ? " stroke-dasharray='6,4'" : "") << "/>\n";
    out << "<text x='" << W - mr + 40 << "' y='" << ly + 4 << "' font-size='12'>" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
  require(out.good(), "write failed for " + path);
}

void write_trajectory_svg(const std::string& path, const Trajectory& real,
                          const Trajectory& predicted) {
  require(!real.states.empty(), "trajectory render: empty trajectory");
  const int n = real.states[0].object_count();
  double xmin = 1e18, xmax = -1e18, ymin = 1e18, ymax = -1e18;
  auto grow = [&](const Trajectory& traj) {
    for (const auto& st : traj.states) {
      for (const auto& o : st.objects) {
        xmin = std::min(xmin, o.position.x - o.radius);
        xmax = std::max(xmax, o.position.x + o.radius);
        ymin = std::min(ymin, o.position.y - o.radius);
        ymax = std::max(ymax, o.position.y + o.radius);
      }
    }
  };
  grow(real);
  grow(predicted);
  const double pad = 0.05;
  xmin -= pad;
  xmax += pad;
  ymin -= pad;
  ymax += pad;

  const double W = 640;
  const double scale = W / (xmax - xmin);
  const double H = (ymax - ymin) * scale;
  auto X = [&](double x) { return (x - xmin) * scale; };
  auto Y = [&](double y) { return H - (y - ymin) * scale; };

  std::ofstream out(path);
  require(out.good(), "cannot open " + path + " for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";

  auto trail = [&](const Trajectory& traj, int obj, const char* color, bool dashed) {
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='2'";
    if (dashed) out << " stroke-dasharray='5,4'";
    out << " points='";
    for (const auto& st : traj.states)
      out << fmt(X(st.objects[obj].position.x)) << "," << fmt(Y(st.objects[obj].position.y))
          << " ";
    out << "'/>\n";
  };

  for (int i = 0; i < n; ++i) {
    const bool pusher = real.states[0].objects[i].controlled;
    const char* color = pusher ? "#000000" : kPalette[i % 10];
    trail(real, i, color, false);
    if (i < predicted.states[0].object_count()) trail(predicted, i, color, true);
    // final discs: real filled translucent, predicted outlined
    const auto& last_real = real.states.back().objects[i];
    out << "<circle cx='" << fmt(X(last_real.position.x)) << "' cy='"
        << fmt(Y(last_real.position.y)) << "' r='" << fmt(last_real.radius * scale)
        << "' fill='" << color << "' fill-opacity='0.25' stroke='" << color << "'/>\n";
    if (i < predicted.states[0].object_count()) {
      const auto& last_pred = predicted.states.back().objects[i];
      out << "<circle cx='" << fmt(X(last_pred.position.x)) << "' cy='"
          << fmt(Y(last_pred.position.y)) << "' r='" << fmt(last_pred.radius * scale)
          << "' fill='none' stroke='" << color << "' stroke-dasharray='5,4'/>\n";
    }
  }
  out << "</svg>\n";
  require(out.good(), "write failed for " + path);
}

}  // namespace pushrel
