/**
 * Visual-analogue-scale slider: a 0..100 range with labeled endpoints and no
 * numbered tick marks. The handle starts at the midpoint; whether the
 * participant ever moved it is kept alongside the value.
 */

export interface VasSlider {
  root: HTMLElement;
  input: HTMLInputElement;
  value(): number;
  touched(): boolean;
}

export function createVasSlider(
  labelText: string,
  leftLabel = "Strongly Disagree",
  rightLabel = "Strongly Agree",
): VasSlider {
  const root = document.createElement("div");
  root.className = "vas-slider";

  const label = document.createElement("label");
  label.textContent = labelText;
  root.appendChild(label);

  const row = document.createElement("div");
  row.className = "vas-row";

  const left = document.createElement("span");
  left.className = "vas-endpoint vas-endpoint-left";
  left.textContent = leftLabel;

  const input = document.createElement("input");
  input.type = "range";
  input.min = "0";
  input.max = "100";
  input.step = "1";
  input.value = "50";

  const right = document.createElement("span");
  right.className = "vas-endpoint vas-endpoint-right";
  right.textContent = rightLabel;

  row.appendChild(left);
  row.appendChild(input);
  row.appendChild(right);
  root.appendChild(row);

  let touched = false;
  input.addEventListener("input", () => {
    touched = true;
  });

  return {
    root,
    input,
    value: () => Math.round(Number(input.value)),
    touched: () => touched,
  };
}
