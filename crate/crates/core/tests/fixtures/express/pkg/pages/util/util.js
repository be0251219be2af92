function init(pageContext) {
  pageContext.onShutterTap = function () {
    const ctx = wx.createCameraContext()
    ctx.takePhoto({
      quality: 'high',
      success: (res) => {
        pageContext.setData({ src: res.tempImagePath })
      }
    })
  }
}

module.exports = { init: init }
