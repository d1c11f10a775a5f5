export * from "./protocol.js";
export * from "./comfortCanvas.js";
export * from "./trackingView.js";
export * from "./trialControl.js";
export * from "./stubRunner.js";
export * from "./console.js";
