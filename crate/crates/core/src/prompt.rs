//! Few-shot prompt templates, sampling parameters and completion extraction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateId {
    #[default]
    Baseline,
    P1,
    P2,
    P3,
    P4,
    P5,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] =
        [TemplateId::Baseline, TemplateId::P1, TemplateId::P2, TemplateId::P3, TemplateId::P4, TemplateId::P5];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::Baseline => "baseline",
            TemplateId::P1 => "p1",
            TemplateId::P2 => "p2",
            TemplateId::P3 => "p3",
            TemplateId::P4 => "p4",
            TemplateId::P5 => "p5",
        }
    }

    fn docstring(self) -> &'static str {
        match self {
            TemplateId::Baseline => DOC_BASELINE,
            TemplateId::P1 => DOC_P1,
            TemplateId::P2 | TemplateId::P3 => DOC_P2,
            TemplateId::P4 => DOC_P4,
            TemplateId::P5 => DOC_P5,
        }
    }

    fn imports(self) -> &'static str {
        match self {
            TemplateId::P2 => "import numpy as np\nimport networkx as nx\nimport itertools\n",
            TemplateId::P3 => "import numpy as np\n",
            _ => "import numpy as np\nimport networkx as nx\n",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown prompt template {s:?}")))
    }
}

const DOC_BASELINE: &str = r#""""
Finds large independent set in graph G where vertices are binary strings of length n.
Vertices in G are connected if they share a subsequence of length at least n-s.
Improve f_1 over its previous versions below.
Keep the code short and comment for easy understanding.
"""
"#;

const DOC_P1: &str = r#""""
Finds large independent set in graph G where vertices are binary strings of length n.
Vertices in G are connected if they share a subsequence of length at least n-s, where s=1.

The functions f assign a priority to each vertex indicating its importance for inclusion in the independent set.

Improve f_1 over its previous versions below.
Keep the code short and comment for easy understanding.
"""
"#;

const DOC_P2: &str = r#""""
Finds large independent set in graph G where vertices are binary strings of length n.
Vertices in G are connected if they share a subsequence of length at least n-s.

Improve f_1 over its previous versions below.
Keep the code short and comment for easy understanding.
"""
"#;

const DOC_P4: &str = r#""""
Finds large independent set in graph G where vertices are binary strings of length n.
Vertices in G are connected if they share a subsequence of length at least n-s.

Improve f_1 over its previous versions below.
Keep the code short and comment for easy understanding.

Consider properties of the binary string v, such as specific patterns, the number of ones/zeros.
"""
"#;

const DOC_P5: &str = r#""""
Finds large independent set in graph G where vertices are binary strings of length n.
Vertices in G are connected if they share a subsequence of length at least n-s.

The functions f assign a priority to each node indicating its importance for inclusion in the independent set.

Desired properties of the function f:
- **Efficiency**: The function should be computationally efficient.
- **Avoid Redundant Computations**: Do not perform unnecessary calculations or repeat work.
- **Clarity**: The code should be easy to understand, with appropriate comments.
- **Innovation**: Explore different strategies for calculating the priority. Consider specific characteristics of the binary strings, such as:
    - Patterns in the binary string.
    - The number of ones or zeros (Hamming weight).
    - Distribution of bits (e.g., runs of ones or zeros).

Improve f_1 over its previous versions below.
Keep the code short and comment for easy understanding.
"""
"#;

const EVAL_SCRIPT: &str = r#"
def generate_graph(n, s):
    G = nx.Graph()
    sequences = [''.join(seq) for seq in itertools.product('01', repeat=n)]
    for seq in sequences:
        G.add_node(seq)
    for i in range(len(sequences)):
        for j in range(i + 1, len(sequences)):
            if has_common_subsequence(sequences[i], sequences[j], n, s):
                G.add_edge(sequences[i], sequences[j])
    return G

def has_common_subsequence(seq1, seq2, n, s):
    threshold = n - s
    if threshold <= 0:
        return True
    prev = [0] * (n + 1)
    current = [0] * (n + 1)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if seq1[i - 1] == seq2[j - 1]:
                current[j] = prev[j - 1] + 1
            else:
                current[j] = max(prev[j], current[j - 1])
            if current[j] >= threshold:
                return True
        prev, current = current, prev
    return False

def evaluate(params):
    n, s = params
    independent_set = solve(n, s)
    return len(independent_set)

def solve(n, s):
    G_original = generate_graph(n, s)
    G_for_priority = G_original.copy()
    priorities = {v: f_{K}(v, G_for_priority, n, s) for v in G_original.nodes}
    vertices_sorted = sorted(G_original.nodes, key=lambda v: (-priorities[v], v))
    independent_set = set()
    for v in vertices_sorted:
        if v not in G_original:
            continue
        independent_set.add(v)
        neighbors = list(G_original.neighbors(v))
        G_original.remove_node(v)
        G_original.remove_nodes_from(neighbors)
    return independent_set
"#;

const FIRST_DOC: &str = "    \"\"\"Returns the priority with which we want to add vertex v.\"\"\"\n";

fn def_line(k: usize) -> String {
    format!("def f_{k}(v, G, n, s):\n")
}

fn improved_doc(k: usize) -> String {
    format!("    \"\"\"Improved version of f_{}\"\"\"\n", k)
}

/// Renders a prompt whose examples are the function bodies in `examples`,
/// lowest score first, followed by the header of `f_{next_index}`.
///
/// With one example the layout matches the initial prompt: `f_0` and the
/// header of `f_1`.
pub fn render_prompt(template: TemplateId, examples: &[&str], next_index: usize) -> Result<String> {
    if examples.is_empty() || examples.len() > next_index {
        return Err(Error::Domain("prompt needs between one and next_index examples"));
    }
    let mut out = String::new();
    out.push_str(template.docstring());
    out.push_str(template.imports());
    if template == TemplateId::P2 {
        out.push_str(&EVAL_SCRIPT.replace("{K}", &format!("{next_index}")));
    }
    let first = next_index - examples.len();
    for (offset, body) in examples.iter().enumerate() {
        let k = first + offset;
        out.push('\n');
        out.push_str(&def_line(k));
        if offset == 0 {
            out.push_str(FIRST_DOC);
        } else {
            out.push_str(&improved_doc(k - 1));
        }
        out.push_str(body.trim_end_matches('\n'));
        out.push('\n');
    }
    out.push('\n');
    out.push_str(&def_line(next_index));
    out.push_str(&improved_doc(next_index - 1));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub repetition_penalty: f64,
    /// Stored-function count at which the temperature reaches zero.
    pub decay: Option<u64>,
}

impl Default for LlmParams {
    fn default() -> Self {
        Self { temperature: 0.94, top_p: 0.78, max_new_tokens: 246, repetition_penalty: 1.2, decay: None }
    }
}

impl LlmParams {
    /// Parameters for a prompt drawn from an island holding `n_j` functions.
    pub fn for_island(&self, n_j: u64) -> LlmParams {
        let mut p = *self;
        if let Some(d) = self.decay {
            p.temperature = dynamic_temperature(self.temperature, n_j, d);
        }
        p
    }
}

/// Linear decay from `base` at `n_j = 0` to zero at `n_j = d`.
pub fn dynamic_temperature(base: f64, n_j: u64, d: u64) -> f64 {
    let d = d.max(1);
    base * (1.0 - n_j as f64 / d as f64).max(0.0)
}

/// Pulls the function body out of a raw completion.
///
/// Markdown fences are unwrapped and a repeated `def` header with its
/// docstring is skipped. The body ends at the first non-indented line,
/// except that a bare unindented `return` line is taken as a one-line body.
/// Returns `None` when nothing usable remains.
pub fn extract_body(completion: &str) -> Option<String> {
    let text = unfence(completion);
    let mut lines = text.lines().peekable();
    while lines.peek().is_some_and(|l| l.trim().is_empty()) {
        lines.next();
    }
    if lines.peek().is_some_and(|l| l.starts_with("def ")) {
        lines.next();
        if lines.peek().is_some_and(|l| l.trim_start().starts_with("\"\"\"")) {
            let doc = lines.next().unwrap_or_default().trim();
            if doc.len() < 6 || !doc.ends_with("\"\"\"") {
                for l in lines.by_ref() {
                    if l.contains("\"\"\"") {
                        break;
                    }
                }
            }
        }
    }
    if let Some(line) = lines.peek().filter(|l| l.starts_with("return ") || *l == &"return") {
        return Some(format!("    {}\n", line.trim_end()));
    }
    let mut body: Vec<&str> = Vec::new();
    for l in lines {
        if !l.trim().is_empty() && !l.starts_with([' ', '\t']) {
            break;
        }
        body.push(l.trim_end());
    }
    while body.last().is_some_and(|l| l.is_empty()) {
        body.pop();
    }
    if body.iter().all(|l| l.trim().is_empty() || l.trim_start().starts_with('#')) {
        return None;
    }
    let mut out = body.join("\n");
    out.push('\n');
    Some(out)
}

fn unfence(completion: &str) -> &str {
    let Some(start) = completion.find("```") else {
        return completion;
    };
    let after = &completion[start + 3..];
    let after = after.find('\n').map_or("", |i| &after[i + 1..]);
    match after.find("```") {
        Some(end) => &after[..end],
        None => after,
    }
}
