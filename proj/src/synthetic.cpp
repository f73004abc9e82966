#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <span>

#include "tdd/corpus.hpp"
#include "tdd/errors.hpp"
#include "tdd/rng.hpp"

namespace tdd {
namespace {

using Pool = std::vector<std::string_view>;

const Pool kComponents = {
    "the tab strip",         "the omnibox",           "the download shelf",   "the bookmark bar",
    "the settings page",     "the print preview",     "the renderer",         "the extension popup",
    "the video player",      "the sync service",      "the password manager", "the spell checker",
    "the new tab page",      "the gpu process",       "the history page",     "the devtools panel",
    "the autofill dropdown", "the media router",      "the pdf viewer",       "the network stack",
    "the socket pool",       "the jni generator",     "the compositor",       "the plugin loader",
};

const Pool kSymptoms = {
    "crashes when",       "freezes after",        "shows a blank page when", "flickers while",
    "stops responding after", "renders garbage when", "loses focus after",      "leaks memory when",
    "hangs for seconds after", "draws the wrong icon when",
};

const Pool kActions = {
    "opening a new window",    "resizing the window",      "switching tabs quickly", "playing a video",
    "printing a long document", "dragging a bookmark",     "closing the last tab",   "restoring a session",
    "signing in",              "loading a large page",     "zooming in twice",       "pressing the back button",
};

// Routine bug-report prose.
const Pool kNeutral = {
    "Steps to reproduce: open the browser and {A}.",
    "{C} {S} {A}.",
    "Confirmed on the stable channel on Windows.",
    "Cannot reproduce this on Linux or Mac.",
    "Attached a screenshot and the crash report.",
    "This looks like a regression from last week.",
    "Bisected the problem to a recent change in {C}.",
    "Verified fixed in the latest canary build.",
    "Marking as a duplicate of an older report.",
    "Please attach the output of the about page.",
    "Thanks for the report, assigning to the owner of {C}.",
    "The fix landed and will ship in the next release.",
    "I see the same behavior when {A}.",
    "Could you try again with a clean profile?",
    "The stack trace points into {C}.",
    "Still happens on the beta channel.",
    "Closing since there has been no activity for a while.",
    "Merged the fix to the release branch.",
    "Users report that {C} {S} {A}.",
    "Happens about half the time when {A}.",
};

// Debt-like discussion that contains none of the key phrases.
const Pool kDesignParaphrase = {
    "The registration code is duplicated in two places and should be factored out.",
    "This layer was written as a temporary shortcut and now every new feature has to touch it.",
    "The generator emits stubs by hand, which makes the build fragile.",
    "We keep adding special cases to {C}; the abstraction no longer fits.",
    "The legacy path in {C} is outdated and nobody owns it anymore.",
    "Ownership between the browser and {C} is tangled and hard to follow.",
    "Long run we should split this class; it has grown to thousands of lines.",
    "Tests are not a nice to have; the coverage gaps will cost us later.",
    "This design limitation forces extra work for every platform port.",
    "It is still not quite working as intended, though it is functional.",
    "The interface is coupled to the old implementation, so every change ripples outward.",
    "The manual table has to be kept in sync with the generated code by hand.",
    "Postponing the migration means we maintain two parallel implementations of {C}.",
    "The configuration flag was meant to be temporary, but it is still here years later.",
    "This module duplicates logic that already lives in the network stack.",
    "Callers copy the same boilerplate because the API is awkward.",
    "We should decouple {C} from the startup sequence before adding more callers.",
    "Every port has to patch around the same limitation in {C}.",
    "The old loader is obsolete, yet three components still call into it.",
    "The ownership model makes it easy to introduce use after free bugs.",
    "We postponed fixing the layering and now the delay is costing us.",
    "The redundant copy of the parser drifted from the original and diverges in edge cases.",
    "Folding these two code paths together would simplify maintenance.",
    "The stale abstraction leaks implementation details into every caller.",
    "Backup paths were committed on the condition that they move to the right place later.",
    "This is convoluted; nobody on the team can explain why the ordering matters.",
};

// Debt discussion that names it directly (key phrases, in list order groups).
const Pool kDesignExplicit = {
    "One might consider this a technical debt paydown bug.",
    "Paying off the debt in {C} has to be a priority.",
    "The current hack in {C} should not survive another release.",
    "We added a workaround until {C} gets a proper fix.",
    "A cleanup of {C} is overdue.",
    "This clean-up touches most of {C}.",
    "We need to clean up the ownership rules before shipping.",
    "I would not give up on fixing the layering.",
    "The init order in {C} is problematic.",
    "The docs for {C} are not up to date with the code.",
    "The naming is inconsistent across the platform ports.",
    "This was a short term fix and it stayed for years.",
    "The port has started to deviate from the upstream design.",
    "We keep having to tweak {C} for every new platform.",
    "The startup code is a mess.",
    "The state machine in {C} is buggy by construction.",
    "The ownership model is too complex to reason about.",
    "We should refactor {C} into smaller units.",
    "This needs a redesign of the interface.",
    "The hard dependency on the old loader blocks the migration.",
    "Restructure the module so the generator owns the tables.",
    "Rework the registration so native exports are used everywhere.",
};

// Key phrases appearing incidentally in routine bug reports.
const Pool kNeutralWithPhrase = {
    "As a workaround, restart the browser.",
    "Clear the cache and clean up the profile folder, then reproduce.",
    "The error message says the file could not be opened.",
    "It seems to depend on the graphics driver version.",
    "Try to remove the extension and reload the page.",
    "The page is fairly complex, with many iframes.",
    "Users give up after the spinner shows for a minute.",
    "The printout looks out of date compared to the screen.",
    "Touching the cleanup routine was not needed for this fix.",
};

const std::array<std::string_view, 10> kStatuses = {"Fixed",     "WontFix",   "Duplicate", "Verified",  "Archived",
                                                    "Assigned",  "Available", "Untriaged", "Started",   "ExternalDependency"};
const std::array<std::string_view, 6> kTypes = {"Bug", "Bug-Regression", "Bug-Security", "Feature", "Task", "Compat"};
const std::array<std::string_view, 5> kDomains = {"chromium.org", "gmail.com", "google.com", "etouch.net", "example.com"};

std::string_view pick(const Pool& pool, Rng& rng) { return pool[rng.below(pool.size())]; }

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& pool, Rng& rng) {
  return pool[rng.below(N)];
}

std::size_t pick_weighted(std::span<const double> weights, Rng& rng) {
  double total = 0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

std::string expand(std::string_view tmpl, Rng& rng) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      switch (tmpl[i + 1]) {
        case 'C': out += pick(kComponents, rng); break;
        case 'S': out += pick(kSymptoms, rng); break;
        case 'A': out += pick(kActions, rng); break;
        default: out += tmpl.substr(i, 3);
      }
      i += 2;
    } else {
      out += tmpl[i];
    }
  }
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

std::string random_hex(Rng& rng, std::size_t n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += kHex[rng.below(16)];
  return s;
}

std::string random_user(Rng& rng) {
  static constexpr std::array<std::string_view, 12> kNames = {"alice", "bob",   "carol", "dave",  "erin", "frank",
                                                              "grace", "heidi", "ivan",  "judy",  "mallory", "oscar"};
  std::string name(kNames[rng.below(kNames.size())]);
  if (rng.bernoulli(0.4)) name = name.substr(0, 3) + "...";
  return name;
}

enum class Kind { neutral, td_explicit, td_implicit };

std::string paragraph(Kind kind, std::size_t sentences, Rng& rng) {
  std::string out;
  for (std::size_t s = 0; s < sentences; ++s) {
    std::string_view tmpl;
    const double u = rng.uniform();
    switch (kind) {
      case Kind::neutral:
        tmpl = u < 0.06 ? pick(kNeutralWithPhrase, rng) : pick(kNeutral, rng);
        break;
      case Kind::td_explicit:
        tmpl = u < 0.35 ? pick(kDesignExplicit, rng) : (u < 0.75 ? pick(kDesignParaphrase, rng) : pick(kNeutral, rng));
        break;
      case Kind::td_implicit:
        tmpl = u < 0.6 ? pick(kDesignParaphrase, rng) : (u < 0.65 ? pick(kNeutralWithPhrase, rng) : pick(kNeutral, rng));
        break;
    }
    if (!out.empty()) out += ' ';
    out += expand(tmpl, rng);
  }
  return out;
}

Ticket make_ticket(std::size_t index, bool td, Rng& rng) {
  Ticket t;
  char id[32];
  std::snprintf(id, sizeof id, "%06zu", index + 1);
  t.id = id;

  const Kind kind = !td ? Kind::neutral : (rng.bernoulli(0.5) ? Kind::td_explicit : Kind::td_implicit);
  if (td) {
    t.title = rng.bernoulli(0.5) ? expand("Clean separation of {C} from its callers", rng)
                                 : expand("{C}: simplify the ownership model", rng);
    if (kind == Kind::td_implicit) t.title = expand("Move {C} to the shared component layer", rng);
  } else {
    t.title = expand("{C} {S} {A}", rng);
  }
  if (!td && rng.bernoulli(0.25)) t.title = expand("Regression: {C} {S} {A}", rng);

  const std::size_t desc_sentences = td ? 2 + rng.below(4) : 1 + rng.below(4);
  t.description = paragraph(kind, desc_sentences, rng);
  if (rng.bernoulli(0.15)) t.description = "<b>Summary</b> " + t.description + " See &quot;about:version&quot;.";

  const auto year_start = parse_rfc3339("2008-08-30T00:00:00Z")->seconds;
  const auto year_end = parse_rfc3339("2017-04-14T00:00:00Z")->seconds;
  t.opened_at = Timestamp{year_start + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(year_end - year_start)))};

  const std::size_t n_comments = td ? 2 + rng.below(7) : rng.below(6);
  std::int64_t when = t.opened_at.seconds;
  for (std::size_t c = 0; c < n_comments; ++c) {
    when += 600 + static_cast<std::int64_t>(rng.below(86400 * 20));
    std::string text = paragraph(kind, 1 + rng.below(td ? 4 : 3), rng);
    if (rng.bernoulli(0.08)) text += " Landed in commit " + random_hex(rng, 40) + ".";
    t.comments.push_back(Comment{random_user(rng) + "@" + std::string(pick(kDomains, rng)), Timestamp{when}, text});
  }

  const double domain_weights_td[] = {0.45, 0.15, 0.25, 0.02, 0.13};
  const double domain_weights_plain[] = {0.30, 0.30, 0.15, 0.07, 0.18};
  const std::size_t domain = pick_weighted(td ? std::span<const double>(domain_weights_td)
                                              : std::span<const double>(domain_weights_plain),
                                           rng);
  t.author_email = random_user(rng) + "@" + std::string(kDomains[domain]);
  if (rng.bernoulli(0.2)) {
    for (char& ch : t.author_email) {
      if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
    }
  }
  t.author_is_project_member = rng.bernoulli(td ? 0.65 : 0.4);
  if (!rng.bernoulli(0.05)) t.priority = static_cast<int>(rng.below(4));
  t.status = std::string(pick(kStatuses, rng));
  if (rng.bernoulli(0.1)) std::transform(t.status.begin(), t.status.end(), t.status.begin(), ::tolower);
  const double type_weights_td[] = {0.35, 0.05, 0.05, 0.25, 0.25, 0.05};
  const double type_weights_plain[] = {0.55, 0.15, 0.1, 0.08, 0.07, 0.05};
  t.issue_type = std::string(kTypes[pick_weighted(
      td ? std::span<const double>(type_weights_td) : std::span<const double>(type_weights_plain), rng)]);
  return t;
}

void split_words(std::string_view text, std::set<std::string>& out) {
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.insert(cur);
    cur.clear();
  };
  for (char ch : text) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    if (ch >= 'a' && ch <= 'z') {
      cur += ch;
    } else if (ch != '\'') {
      flush();
    }
  }
  flush();
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config) {
  if (config.n_tickets == 0) throw UsageError("n_tickets must be positive");
  if (!(config.td_rate >= 0.0 && config.td_rate <= 1.0)) throw UsageError("td_rate must lie in [0,1]");

  Rng rng(config.seed);
  const auto n_td = static_cast<std::size_t>(std::llround(config.td_rate * static_cast<double>(config.n_tickets)));

  std::vector<std::size_t> order(config.n_tickets);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<bool> is_td(config.n_tickets, false);
  for (std::size_t i = 0; i < n_td; ++i) is_td[order[i]] = true;

  SyntheticCorpus out;
  for (std::size_t i = 0; i < config.n_tickets; ++i) {
    Rng ticket_rng(mix_seed(config.seed, i));
    Ticket t = make_ticket(i, is_td[i], ticket_rng);
    out.truth[t.id] = is_td[i] ? 1 : 0;
    out.corpus.add_ticket(std::move(t));
  }
  return out;
}

std::vector<std::string> synthetic_vocabulary() {
  std::set<std::string> words;
  for (const Pool* pool : {&kComponents, &kSymptoms, &kActions, &kNeutral, &kDesignParaphrase, &kDesignExplicit,
                           &kNeutralWithPhrase}) {
    for (std::string_view s : *pool) split_words(s, words);
  }
  for (auto s : kStatuses) split_words(s, words);
  for (auto s : {"summary", "about", "version", "landed", "in", "commit", "regression", "clean", "separation",
                 "of", "from", "its", "callers", "simplify", "ownership", "model", "move", "to", "shared",
                 "component", "layer"}) {
    split_words(s, words);
  }
  return {words.begin(), words.end()};
}

void write_synthetic_pretrained(const std::filesystem::path& path, std::size_t dim, std::uint64_t seed) {
  // Concept targets and words that should land near them.
  const std::vector<std::pair<std::string_view, std::vector<std::string_view>>> clusters = {
      {"deviate", {"differ", "diverge", "diverges", "vary", "drifted", "change", "deviation"}},
      {"outdated", {"old", "legacy", "obsolete", "stale", "older", "date", "ancient"}},
      {"redundant", {"duplicated", "duplicates", "duplicate", "copy", "repeated", "parallel", "two"}},
      {"redesign", {"rework", "restructure", "refactor", "simplify", "split", "folding", "design"}},
      {"decouple", {"separate", "separation", "isolate", "coupled", "decoupling", "detach"}},
      {"complicated", {"complex", "convoluted", "tangled", "intricate", "awkward", "hard"}},
      {"regret", {"sorry", "unfortunately", "mistake", "wish"}},
      {"corrupt", {"corrupted", "garbage", "broken", "damaged"}},
      {"horrible", {"awful", "terrible", "ugly", "mess"}},
      {"delay", {"postpone", "postponed", "postponing", "later", "defer", "wait", "years"}},
  };

  Rng rng(seed);
  auto random_unit = [&] {
    std::vector<double> v(dim);
    double norm = 0;
    for (double& x : v) {
      // Sum of uniforms: cheap, symmetric, deterministic.
      x = rng.uniform() + rng.uniform() + rng.uniform() - 1.5;
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  };

  std::map<std::string, std::vector<double>> vectors;
  for (const auto& [target, related] : clusters) {
    const std::vector<double> center = random_unit();
    vectors[std::string(target)] = center;
    for (std::string_view word : related) {
      const std::vector<double> noise = random_unit();
      std::vector<double> v(dim);
      for (std::size_t d = 0; d < dim; ++d) v[d] = 0.75 * center[d] + 0.55 * noise[d];
      vectors.emplace(std::string(word), std::move(v));
    }
  }
  for (const std::string& word : synthetic_vocabulary()) {
    if (!vectors.contains(word)) vectors.emplace(word, random_unit());
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding file: " + path.string());
  char buf[32];
  for (const auto& [word, v] : vectors) {
    out << word;
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %.6f", x);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace tdd
