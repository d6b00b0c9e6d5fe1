//! Hex: Awk with DOM-traversal built-ins, compiled and executed against
//! a parsed HTML document.
//!
//! A script consists of BEGIN blocks and function definitions; the
//! pattern-action main loop does not exist because the input document is
//! reachable only through the `root`/`parent`/`sister`/`children`/
//! `type`/`name`/`text`/`attr`/`selmatch`/`seconds` built-ins. Execution
//! is sandboxed: no file, environment, or network access, and cpu,
//! output-size, step, and recursion limits all abort with an in-band
//! error.

mod ast;
mod interp;
mod lexer;
mod parser;
mod seconds;
mod sprintf;
mod value;

use std::fmt;
use std::time::{Duration, Instant};

use crate::htmldom::DomTree;
use crate::sexpr::{Digest, Value};

pub use ast::Function;
pub use seconds::seconds;

/// A compiled script: immutable and shareable across threads.
#[derive(Debug)]
pub struct HexProgram {
    source: Vec<u8>,
    begin: Vec<ast::Stmt>,
    functions: Vec<ast::Function>,
    regexes: Vec<crate::ere::Pattern>,
    globals: Vec<String>,
}

impl HexProgram {
    pub fn source(&self) -> &[u8] {
        &self.source
    }

    /// The script-hash: the canonical hash of the exact source bytes as
    /// a single atom.
    pub fn script_hash(&self) -> Digest {
        Value::Atom(self.source.clone()).hash_canonical()
    }

    pub fn function_count(&self) -> usize {
        self.functions.len()
    }

    pub fn function_names(&self) -> impl Iterator<Item = &str> {
        self.functions.iter().map(|f| f.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {message}")]
pub struct CompileError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

/// Compile Hex source bytes.
pub fn compile(src: &[u8]) -> Result<HexProgram, CompileError> {
    let parsed = parser::parse(src)?;
    Ok(HexProgram {
        source: src.to_vec(),
        begin: parsed.begin,
        functions: parsed.functions,
        regexes: parsed.regexes,
        globals: parsed.globals,
    })
}

/// Execution resource limits.
#[derive(Debug, Clone)]
pub struct Limits {
    pub cpu_seconds: f64,
    pub max_output_bytes: usize,
    pub max_steps: u64,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits {
            cpu_seconds: 10.0,
            max_output_bytes: 16 << 20,
            max_steps: 50_000_000,
        }
    }
}

/// What an execution produced.
#[derive(Debug, Clone)]
pub struct ExecOutcome {
    pub stdout: Vec<u8>,
    pub exit_status: i32,
    /// Runtime error or resource-limit message; implies a nonzero status.
    pub error: Option<String>,
    /// Warnings (bad selmatch selectors and the like); never part of stdout.
    pub diagnostics: Vec<String>,
    pub cpu_time: Duration,
    pub output_bytes: usize,
}

impl ExecOutcome {
    pub fn success(&self) -> bool {
        self.exit_status == 0 && self.error.is_none()
    }
}

impl fmt::Display for ExecOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "status {}, {} output bytes, {:?}",
            self.exit_status, self.output_bytes, self.cpu_time
        )?;
        if let Some(e) = &self.error {
            write!(f, ", error: {e}")?;
        }
        Ok(())
    }
}

/// Run a compiled program against a document. Never panics; scripted
/// recursion runs on a dedicated large-stack thread so deep documents
/// cannot exhaust the caller's stack.
pub fn execute(program: &HexProgram, tree: &DomTree, limits: &Limits) -> ExecOutcome {
    std::thread::scope(|scope| {
        // Lazily committed; sized for 10k interpreter frames in debug
        // builds, where Rust frames are at their fattest.
        let handle = std::thread::Builder::new()
            .name("hex-exec".into())
            .stack_size(512 << 20)
            .spawn_scoped(scope, || run(program, tree, limits))
            .expect("spawn interpreter thread");
        handle.join().expect("interpreter thread panicked")
    })
}

fn run(program: &HexProgram, tree: &DomTree, limits: &Limits) -> ExecOutcome {
    let started = Instant::now();
    let mut interp = interp::Interp::new(program, tree, limits);
    let result = interp.run_begin();
    let (exit_status, error) = match result {
        Ok(()) => (0, None),
        Err(interp::Abort::Exit(code)) => (code, None),
        Err(interp::Abort::Error(message)) => (2, Some(message)),
    };
    let stdout = std::mem::take(&mut interp.stdout);
    let output_bytes = stdout.len();
    ExecOutcome {
        stdout,
        exit_status,
        error,
        diagnostics: std::mem::take(&mut interp.diagnostics),
        cpu_time: started.elapsed(),
        output_bytes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::htmldom::parse_html;

    fn run_src(src: &str) -> ExecOutcome {
        let program = compile(src.as_bytes()).expect("compile");
        execute(&program, &parse_html(b""), &Limits::default())
    }

    fn stdout_of(src: &str) -> String {
        let outcome = run_src(src);
        assert!(
            outcome.error.is_none(),
            "unexpected error: {:?}",
            outcome.error
        );
        String::from_utf8(outcome.stdout).unwrap()
    }

    #[test]
    fn hello_arithmetic() {
        assert_eq!(stdout_of("BEGIN { print 1+1 }"), "2\n");
        assert_eq!(stdout_of("BEGIN { print 7/2, 2^10, 7%3 }"), "3.5 1024 1\n");
        assert_eq!(stdout_of("BEGIN { print -2^2, 2^-1 }"), "-4 0.5\n");
    }

    #[test]
    fn root_is_one() {
        assert_eq!(stdout_of("BEGIN { print root() }"), "1\n");
    }

    #[test]
    fn print_and_exit_status() {
        let outcome = run_src("BEGIN { print \"error: x\"; exit 1 }");
        assert_eq!(outcome.stdout, b"error: x\n");
        assert_eq!(outcome.exit_status, 1);
        assert!(outcome.error.is_none());
    }

    #[test]
    fn exit_stops_execution() {
        let outcome = run_src("BEGIN { print \"a\"; exit 3; print \"b\" }");
        assert_eq!(outcome.stdout, b"a\n");
        assert_eq!(outcome.exit_status, 3);
    }

    #[test]
    fn string_ops() {
        assert_eq!(stdout_of(r#"BEGIN { print length("hello") }"#), "5\n");
        assert_eq!(stdout_of(r#"BEGIN { print substr("hello", 2, 3) }"#), "ell\n");
        assert_eq!(stdout_of(r#"BEGIN { print index("hello", "ll") }"#), "3\n");
        assert_eq!(stdout_of(r#"BEGIN { print toupper("aBc"), tolower("aBc") }"#), "ABC abc\n");
        assert_eq!(stdout_of(r#"BEGIN { x = "a" "b" 1+1; print x }"#), "ab2\n");
    }

    #[test]
    fn uninitialized_values() {
        assert_eq!(stdout_of("BEGIN { print x }"), "\n");
        assert_eq!(stdout_of("BEGIN { print x + 0 }"), "0\n");
        assert_eq!(stdout_of("BEGIN { x++; print x }"), "1\n");
        assert_eq!(stdout_of(r#"BEGIN { if (q == "") print "empty"; if (q == 0) print "zero" }"#), "empty\nzero\n");
    }

    #[test]
    fn arrays_and_subsep() {
        assert_eq!(
            stdout_of("BEGIN { a[1,2] = \"x\"; if ((1,2) in a) print \"yes\"; print a[1,2] }"),
            "yes\nx\n"
        );
        assert_eq!(
            stdout_of("BEGIN { a[1]=10; a[2]=20; n=0; for (k in a) n += a[k]; print n }"),
            "30\n"
        );
        assert_eq!(
            stdout_of("BEGIN { a[1]=1; delete a[1]; print (1 in a) }"),
            "0\n"
        );
        assert_eq!(
            stdout_of("BEGIN { a[1]=1; a[2]=2; delete a; n=0; for (k in a) n++; print n }"),
            "0\n"
        );
    }

    #[test]
    fn function_array_aliasing() {
        // An untyped variable passed where the callee uses an array
        // becomes that array in the caller.
        assert_eq!(
            stdout_of(
                "function fill(arr) { arr[\"k\"] = \"v\"; return 9 }\n\
                 BEGIN { print fill(z), z[\"k\"] }"
            ),
            "9 v\n"
        );
    }

    #[test]
    fn recursion() {
        assert_eq!(
            stdout_of(
                "function rec(n) { if (n <= 0) return 0; return n + rec(n-1) }\n\
                 BEGIN { print rec(10) }"
            ),
            "55\n"
        );
    }

    #[test]
    fn extra_params_are_locals() {
        assert_eq!(
            stdout_of(
                "function f(a, b,   t) { t = a b; return t }\n\
                 BEGIN { t = \"outer\"; print f(\"x\", \"y\"); print t }"
            ),
            "xy\nouter\n"
        );
    }

    #[test]
    fn split_and_regex() {
        assert_eq!(
            stdout_of("BEGIN { n = split(\"headline date author body\", fields); print n, fields[1], fields[4] }"),
            "4 headline body\n"
        );
        assert_eq!(
            stdout_of("BEGIN { n = split(\"a,b,,c\", a, \",\"); print n, \"[\" a[3] \"]\" }"),
            "4 []\n"
        );
        assert_eq!(
            stdout_of("BEGIN { s = \"aaa\"; print gsub(/a/, \"[&]\", s), s }"),
            "3 [a][a][a]\n"
        );
        assert_eq!(
            stdout_of("BEGIN { s = \"abc\"; print gsub(/x*/, \"-\", s), s }"),
            "4 -a-b-c-\n"
        );
        assert_eq!(
            stdout_of("BEGIN { if (match(\"xab\", \"a|ab\")) print RSTART, RLENGTH }"),
            "2 2\n"
        );
        assert_eq!(stdout_of("BEGIN { print (\"ab\" ~ /b$/), (\"ab\" !~ /c/) }"), "1 1\n");
    }

    #[test]
    fn seconds_builtin() {
        assert_eq!(
            stdout_of(r#"BEGIN { print seconds("2024-12-13T17:52:22.647Z") }"#),
            "1734112342\n"
        );
        assert_eq!(
            stdout_of(r#"BEGIN { print seconds("1970-01-01T00:00:00Z") }"#),
            "0\n"
        );
        assert_eq!(
            stdout_of(r#"BEGIN { print "[" seconds("not a date") "]" }"#),
            "[]\n"
        );
    }

    #[test]
    fn dom_builtins_on_simple_tree() {
        let program = compile(
            b"BEGIN {\n\
              n = root()\n\
              print type(n)\n\
              c = children(n)\n\
              print name(c)\n\
              p = children(children(c))\n\
              print name(p), text(children(p))\n\
              print parent(0), sister(99), type(0)\n\
            }",
        )
        .unwrap();
        let tree = parse_html(b"<html><body><p>hi</p></body></html>");
        let outcome = execute(&program, &tree, &Limits::default());
        assert_eq!(
            String::from_utf8(outcome.stdout).unwrap(),
            "ROOT\nhtml\np hi\n0 0 \n"
        );
    }

    #[test]
    fn selmatch_builtin() {
        let program = compile(
            b"BEGIN {\n\
              for (n = 1; n <= 20; n++)\n\
                if (selmatch(n, \"main#main-content article div p\"))\n\
                  print n, name(n)\n\
            }",
        )
        .unwrap();
        let tree = parse_html(
            b"<main id=\"main-content\"><article><div><p>a</p><p>b</p></div></article></main>",
        );
        let outcome = execute(&program, &tree, &Limits::default());
        let text = String::from_utf8(outcome.stdout).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| l.ends_with(" p")));
    }

    #[test]
    fn selmatch_bad_selector_warns_and_returns_zero() {
        let program =
            compile(b"BEGIN { print selmatch(1, \"p:hover\") ; print selmatch(1, \"p:hover\") }")
                .unwrap();
        let outcome = execute(&program, &parse_html(b"<p>x</p>"), &Limits::default());
        assert_eq!(outcome.stdout, b"0\n0\n");
        // Warned once per distinct selector.
        assert_eq!(outcome.diagnostics.len(), 1);
        assert!(outcome.diagnostics[0].contains("p:hover"));
    }

    #[test]
    fn pattern_action_is_a_compile_error() {
        let err = compile(b"{ print }").unwrap_err();
        assert!(err.message.contains("pattern-action"));
        let err = compile(b"END { print 1 }").unwrap_err();
        assert!(err.message.contains("pattern-action"));
    }

    #[test]
    fn getline_and_fields_are_compile_errors() {
        assert!(compile(b"BEGIN { getline x }").is_err());
        assert!(compile(b"BEGIN { print $1 }").is_err());
        assert!(compile(b"BEGIN { print 1 > \"f\" }").is_err());
        assert!(compile(b"BEGIN { sub(/a/, \"b\") }").is_err());
    }

    #[test]
    fn builtin_redefinition_is_an_error() {
        let err = compile(b"function length(x) { return 1 }").unwrap_err();
        assert!(err.message.contains("built-in"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = compile(b"BEGIN { if }").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.col > 0);
    }

    #[test]
    fn runtime_error_scalar_as_array() {
        let outcome = run_src("BEGIN { x = 1; x[2] = 3 }");
        assert!(outcome.error.is_some());
        assert_ne!(outcome.exit_status, 0);
    }

    #[test]
    fn infinite_loop_hits_limits() {
        let program = compile(b"BEGIN { while (1) x++ }").unwrap();
        let limits = Limits {
            cpu_seconds: 0.3,
            max_output_bytes: 1 << 20,
            max_steps: u64::MAX,
        };
        let started = Instant::now();
        let outcome = execute(&program, &parse_html(b""), &limits);
        let elapsed = started.elapsed().as_secs_f64();
        assert!(outcome.error.as_deref().unwrap_or("").contains("resource limit"));
        assert!(elapsed < 0.6, "took {elapsed}s, limit was 0.3s");
    }

    #[test]
    fn output_limit() {
        let program = compile(b"BEGIN { while (1) print \"xxxxxxxxxxxxxxxx\" }").unwrap();
        let limits = Limits {
            cpu_seconds: 10.0,
            max_output_bytes: 4096,
            max_steps: u64::MAX,
        };
        let outcome = execute(&program, &parse_html(b""), &limits);
        assert!(outcome
            .error
            .as_deref()
            .unwrap()
            .contains("resource limit: output"));
    }

    #[test]
    fn step_limit() {
        let program = compile(b"BEGIN { while (1) x++ }").unwrap();
        let limits = Limits {
            cpu_seconds: 1e9,
            max_output_bytes: 1 << 20,
            max_steps: 10_000,
        };
        let outcome = execute(&program, &parse_html(b""), &limits);
        assert!(outcome
            .error
            .as_deref()
            .unwrap()
            .contains("resource limit: steps"));
    }

    #[test]
    fn recursion_limit() {
        let outcome = run_src("function f(n) { return f(n+1) }\nBEGIN { f(0) }");
        assert!(outcome
            .error
            .as_deref()
            .unwrap()
            .contains("recursion depth"));
    }

    #[test]
    fn determinism() {
        let src = "BEGIN { for (i = 0; i < 100; i++) a[i] = i * i; \
                   for (k in a) s += a[k]; print s; print length(a) }";
        let first = stdout_of(src);
        for _ in 0..3 {
            assert_eq!(stdout_of(src), first);
        }
    }

    #[test]
    fn script_hash_is_atom_hash_of_source() {
        let src = b"BEGIN { print 1 }";
        let program = compile(src).unwrap();
        assert_eq!(
            program.script_hash(),
            Value::Atom(src.to_vec()).hash_canonical()
        );
    }

    #[test]
    fn printf_statement() {
        assert_eq!(stdout_of("BEGIN { printf \"%d-%s|\", 42, \"x\" }"), "42-x|");
        assert_eq!(stdout_of("BEGIN { printf \"%5.2f\\n\", 3.14159 }"), " 3.14\n");
    }

    #[test]
    fn ofmt_and_convfmt() {
        assert_eq!(stdout_of("BEGIN { x = 3.14159265; print x }"), "3.14159\n");
        assert_eq!(
            stdout_of("BEGIN { x = 3.14159265; CONVFMT = \"%.2g\"; print x \"\" }"),
            "3.1\n"
        );
        assert_eq!(
            stdout_of("BEGIN { x = 3.14159265; OFMT = \"%.3g\"; print x }"),
            "3.14\n"
        );
    }

    #[test]
    fn comparison_semantics() {
        assert_eq!(stdout_of("BEGIN { print (10 < \"9\") }"), "1\n");
        assert_eq!(stdout_of("BEGIN { print (1 == \"1.0\") }"), "0\n");
        assert_eq!(
            stdout_of("BEGIN { n = split(\"10 9\", a); print (a[1] > a[2]) }"),
            "1\n"
        );
        assert_eq!(stdout_of("BEGIN { if (\"0\") print \"t\"; else print \"f\" }"), "t\n");
    }

    #[test]
    fn do_while_and_ternary() {
        assert_eq!(stdout_of("BEGIN { m = 0; do { m++ } while (m < 3); print m }"), "3\n");
        assert_eq!(stdout_of("BEGIN { print (1 > 0 ? \"y\" : \"n\") }"), "y\n");
    }
}
