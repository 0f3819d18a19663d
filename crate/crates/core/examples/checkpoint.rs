//! Round trip of a chain through the text checkpoint format.

use npu::units::{read_checkpoint, write_checkpoint, Chain, LayerKind};

fn main() -> npu::Result<()> {
    let chain = Chain::init(&[(LayerKind::Npu, 2, 3), (LayerKind::Nau, 3, 1)], 4)?;
    let mut buf = Vec::new();
    write_checkpoint(&chain, &mut buf)?;
    let text = String::from_utf8(buf).expect("checkpoints are utf-8");
    println!("{text}");
    let back = read_checkpoint(text.as_bytes())?;
    println!("identical after reload: {}", back == chain);
    Ok(())
}
