use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

/// Canonical text for a program: rules first, then definitions, each block
/// separated by a blank line. Re-parsing the output yields an equal program.
pub fn format_program(program: &BehaviorProgram) -> String {
    let mut blocks: Vec<String> = Vec::new();
    for rule in &program.rules {
        let mut b = String::new();
        let _ = writeln!(b, "WHEN {}", format_condition(&rule.condition));
        let _ = writeln!(b, "DO {}", rule.then_behavior);
        if let Some(other) = &rule.else_behavior {
            b.push_str("ELSE\n");
            let _ = writeln!(b, "DO {other}");
        }
        b.push_str("END\n");
        blocks.push(b);
    }
    for def in program.definitions.values() {
        let mut b = String::new();
        let _ = writeln!(b, "DEFINE {}", def.name);
        for stmt in &def.body {
            let _ = writeln!(b, "{INDENT}{}", format_statement(stmt));
        }
        b.push_str("END\n");
        blocks.push(b);
    }
    blocks.join("\n")
}

pub fn format_condition(cond: &Condition) -> String {
    let mut out = String::new();
    write_condition(&mut out, cond, 0);
    out
}

// binding strength: OR 1, AND 2, NOT and comparisons 3
fn write_condition(out: &mut String, cond: &Condition, min_prec: u8) {
    let (prec, lhs_prec, rhs_prec, word) = match cond {
        Condition::Comparison {
            signal,
            level,
            op,
            value,
        } => {
            out.push_str(&signal.name);
            if *level {
                out.push_str(" LEVEL");
            }
            let _ = write!(out, " {} {value}", op.symbol());
            return;
        }
        Condition::Not(inner) => {
            out.push_str("NOT ");
            write_condition(out, inner, 3);
            return;
        }
        Condition::Or(..) => (1, 1, 2, "OR"),
        Condition::And(..) => (2, 2, 3, "AND"),
    };
    let (Condition::Or(l, r) | Condition::And(l, r)) = cond else {
        unreachable!()
    };
    let paren = prec < min_prec;
    if paren {
        out.push('(');
    }
    write_condition(out, l, lhs_prec);
    let _ = write!(out, " {word} ");
    write_condition(out, r, rhs_prec);
    if paren {
        out.push(')');
    }
}

fn format_statement(stmt: &Statement) -> String {
    match stmt {
        Statement::Move { actuator, speed } => match speed {
            Speed::Slowly => format!("MOVE {actuator} SLOWLY"),
            Speed::Quickly => format!("MOVE {actuator} QUICKLY"),
            Speed::Value(v) => format!("MOVE {actuator} {v}"),
        },
        Statement::Play { file, .. } => format!("PLAY sound \"{file}\""),
        Statement::Set { actuator, value } => format!("SET {actuator} {value}"),
        Statement::Wait { duration_us, unit } => match unit {
            TimeUnit::Millis => format!("WAIT {} ms", duration_us / 1000),
            TimeUnit::Micros => format!("WAIT {duration_us} us"),
        },
    }
}
