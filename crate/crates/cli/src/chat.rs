use std::io::{BufRead, IsTerminal, Write};

use kennel_core::{Chatter, PromptParameters, SessionId};

use crate::error::CliResult;

/// Reads prompts line by line until `/quit` or end of input. Failed turns
/// are reported on `err` and the loop continues.
pub fn repl(
    chatter: &dyn Chatter,
    session: &SessionId,
    params: &PromptParameters,
    input: impl BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let interactive = std::io::stdin().is_terminal();
    let prompt_marker = |out: &mut dyn Write| -> std::io::Result<()> {
        if interactive {
            write!(out, "> ")?;
            out.flush()?;
        }
        Ok(())
    };
    prompt_marker(out)?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        match line {
            "" => {}
            "/quit" | "/exit" => break,
            "/history" => {
                for m in chatter.history().load_history(session)? {
                    writeln!(out, "{}: {}", m.role, m.content)?;
                }
            }
            prompt => match chatter.bark(session, prompt, Some(params)) {
                Ok(resp) => writeln!(out, "{}", resp.text)?,
                Err(e) => writeln!(err, "error [{}]: {e}", e.kind().as_str())?,
            },
        }
        out.flush()?;
        prompt_marker(out)?;
    }
    Ok(())
}
