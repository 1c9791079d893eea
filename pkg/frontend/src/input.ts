/**
 * Keyboard and gamepad input mapped onto a reference twist.
 *
 * Arrows/WASD give unit deflection per axis, Q/E rotate; the linear part is
 * normalized so a diagonal never exceeds the configured joystick ceiling.
 * Sent at the control tick rate; idle keys mean an explicit zero twist.
 */

export interface Twist {
  vx: number;
  vy: number;
  omega: number;
}

const KEY_AXES: Record<string, [number, number, number]> = {
  ArrowUp: [0, 1, 0],
  ArrowDown: [0, -1, 0],
  ArrowLeft: [-1, 0, 0],
  ArrowRight: [1, 0, 0],
  w: [0, 1, 0],
  s: [0, -1, 0],
  a: [-1, 0, 0],
  d: [1, 0, 0],
  q: [0, 0, 1],
  e: [0, 0, -1],
};

export const OMEGA_MAX = 1.0; // rad/s at full deflection

/** Pure mapping from the set of held keys to a twist scaled by vMax. */
export function twistFromKeys(keys: Set<string>, vMax: number): Twist {
  let x = 0;
  let y = 0;
  let w = 0;
  for (const key of keys) {
    const axes = KEY_AXES[key];
    if (!axes) continue;
    x += axes[0];
    y += axes[1];
    w += axes[2];
  }
  const mag = Math.hypot(x, y);
  if (mag > 1) {
    x /= mag;
    y /= mag;
  }
  return { vx: x * vMax, vy: y * vMax, omega: Math.sign(w) * OMEGA_MAX };
}

export interface GamepadLike {
  axes: ReadonlyArray<number>;
}

const DEADZONE = 0.12;

/** Left stick drives translation, right stick x rotates. */
export function twistFromGamepad(pad: GamepadLike, vMax: number): Twist {
  const dead = (v: number) => (Math.abs(v) < DEADZONE ? 0 : v);
  let x = dead(pad.axes[0] ?? 0);
  let y = dead(-(pad.axes[1] ?? 0)); // stick up means +y in the room
  const w = dead(-(pad.axes[2] ?? 0));
  const mag = Math.hypot(x, y);
  if (mag > 1) {
    x /= mag;
    y /= mag;
  }
  return { vx: x * vMax, vy: y * vMax, omega: w * OMEGA_MAX };
}

/** Combine sources: any gamepad deflection overrides the keyboard. */
export function combineTwists(keyboard: Twist, gamepad: Twist | null): Twist {
  if (gamepad && (gamepad.vx !== 0 || gamepad.vy !== 0 || gamepad.omega !== 0)) {
    return gamepad;
  }
  return keyboard;
}

/** Tracks held keys from DOM events; the poll side stays pure. */
export class KeyboardTracker {
  readonly held = new Set<string>();

  keyDown(key: string): void {
    this.held.add(key.length === 1 ? key.toLowerCase() : key);
  }

  keyUp(key: string): void {
    this.held.delete(key.length === 1 ? key.toLowerCase() : key);
  }

  clear(): void {
    this.held.clear();
  }
}
