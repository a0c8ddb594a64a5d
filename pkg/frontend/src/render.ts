// Projects a view state onto a surface. Pure apart from the surface
// calls: what gets drawn is decided entirely by the state, so replaying
// a message history reproduces the exact draw sequence.

import { base64ToBytes } from "./protocol.js";
import { DrawSurface } from "./surface.js";
import { Flash, ViewState } from "./state.js";

export const STUDENT_BLANK = "#808080"; // mid-gray "blank" canvas
export const BUBBLE_BOX = "rgba(60, 120, 255, 0.35)"; // translucent blue
const FLASH_STYLE: Record<Exclude<Flash, "none">, string> = {
  green: "#19c319",
  red: "#d42a2a",
};

export function render(view: ViewState, surface: DrawSurface): void {
  switch (view.phase) {
    case "playing_teacher":
      renderTeacher(view, surface);
      break;
    case "playing_student":
      renderStudent(view, surface);
      break;
    default:
      surface.clear(STUDENT_BLANK);
  }
  if (view.flash !== "none") {
    surface.drawOutline(FLASH_STYLE[view.flash]);
  }
}

function renderTeacher(view: ViewState, surface: DrawSurface): void {
  surface.clear(STUDENT_BLANK);
  if (view.image !== null) {
    surface.drawRGB(0, 0, view.width, view.height, base64ToBytes(view.image));
  }
  // One translucent box per confirmed bubble, at the patch extent the
  // server reported; the cursor itself is not a confirmation.
  for (const b of view.bubbles) {
    surface.drawBox(b.x, b.y, b.w, b.h, BUBBLE_BOX);
  }
}

function renderStudent(view: ViewState, surface: DrawSurface): void {
  // Start blank every frame: the only pixels that may ever show image
  // data are the ones a patch_revealed payload covers.
  surface.clear(STUDENT_BLANK);
  for (const p of view.patches) {
    surface.drawRGB(p.x, p.y, p.w, p.h, base64ToBytes(p.data));
  }
}
